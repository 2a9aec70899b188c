//! Ground-truth sampling, error metrics and the Monte-Carlo experiment harness.
//!
//! Every run draws from its own ChaCha8 stream: the generator is seeded with
//! the experiment's base seed and its stream id is
//! `(condition_index << 32) | run_index`. Runs are therefore independent of
//! each other, of scheduling, and of how many other conditions exist after
//! them.

use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::EulerStep;
use crate::gcm::{FlowDecomposition, Region, TransitionMatrix};
use crate::grid::{CellIndex, Direction, Workspace};
use crate::hmm::{viterbi, ObservationHistory, PriorMode, StateTrajectory};
use crate::ingest::{load_field, synthesize_field, SyntheticField};
use crate::model::FlowModel;

/// Generator for run `run` of condition `condition`.
pub fn run_rng(base_seed: u64, condition: u32, run: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream((u64::from(condition) << 32) | u64::from(run));
    rng
}

fn sample_index<R: Rng + ?Sized>(weights: impl IntoIterator<Item = (usize, f64)>, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in weights {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver above the cumulative sum
    last
}

/// Samples `x_0 ~ π`, `x_t ~ P[x_{t-1}]` and records the heading of each move.
pub fn sample_trajectory<R: Rng + ?Sized>(
    w: &Workspace,
    p: &TransitionMatrix,
    pi: &[f64],
    horizon: usize,
    rng: &mut R,
) -> Result<(StateTrajectory, ObservationHistory)> {
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be at least 1".into()));
    }
    if pi.len() != p.len() {
        return Err(Error::Dimension(format!("π has {} entries, P has {} states", pi.len(), p.len())));
    }
    let mut s = sample_index(pi.iter().copied().enumerate(), rng);
    let mut path = vec![p.cell(s)];
    let mut obs = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next = sample_index(p.row(s).iter().copied(), rng);
        obs.push(w.direction_between(p.cell(s), p.cell(next))?);
        s = next;
        path.push(p.cell(s));
    }
    Ok((path, ObservationHistory(obs)))
}

pub fn sample_trajectory_seeded(
    w: &Workspace,
    p: &TransitionMatrix,
    pi: &[f64],
    horizon: usize,
    seed: u64,
) -> Result<(StateTrajectory, ObservationHistory)> {
    sample_trajectory(w, p, pi, horizon, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Replaces each symbol, with probability `rate`, by one of the other eight
/// chosen uniformly.
pub fn corrupt_observations<R: Rng + ?Sized>(obs: &mut ObservationHistory, rate: f64, rng: &mut R) {
    if rate <= 0.0 {
        return;
    }
    for y in obs.0.iter_mut() {
        if rng.gen::<f64>() < rate {
            let k = rng.gen_range(0..Direction::COUNT - 1);
            let k = if k >= y.index() { k + 1 } else { k };
            *y = Direction::from_index(k).expect("index below 9");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Distance between the true and decoded final cells.
    pub final_error: f64,
    /// Sum of per-step distances over `t = 1..T`.
    pub trajectory_error: f64,
}

pub fn error_report(w: &Workspace, truth: &[CellIndex], decoded: &[CellIndex]) -> Result<ErrorReport> {
    if truth.len() != decoded.len() || truth.is_empty() {
        return Err(Error::Dimension(format!(
            "true path has {} states, decoded path has {}",
            truth.len(),
            decoded.len()
        )));
    }
    let mut trajectory_error = 0.0;
    for (a, b) in truth.iter().zip(decoded).skip(1) {
        trajectory_error += w.cell_distance(*a, *b)?;
    }
    let final_error = w.cell_distance(*truth.last().unwrap(), *decoded.last().unwrap())?;
    Ok(ErrorReport { final_error, trajectory_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    File(PathBuf),
    Synthetic { spec: SyntheticField, rows: usize, cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DtPolicy {
    /// Time for the fastest cell to cross one cell.
    #[default]
    CellCrossing,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPolicy {
    /// Every run deploys at this cell.
    Cell(CellIndex),
    /// One condition per region of the decomposition; each run deploys at a
    /// cell drawn uniformly from that region.
    PerRegion,
    /// Each run deploys at a uniformly drawn water cell.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

fn default_r() -> f64 {
    0.9
}

fn default_structure_r() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub field: FieldSource,
    /// Perfect-motion probability of the simulated and decoded chain.
    #[serde(default = "default_r")]
    pub r: f64,
    /// Perfect-motion probability used for the attractor decomposition that
    /// defines regions.
    #[serde(default = "default_structure_r")]
    pub structure_r: f64,
    #[serde(default)]
    pub dt: DtPolicy,
    pub modes: Vec<PriorMode>,
    pub horizons: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub start: StartPolicy,
    /// Probability of replacing each compass reading by a wrong symbol.
    #[serde(default)]
    pub obs_noise: f64,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl ExperimentConfig {
    /// Checks everything that does not need the field; returns all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.r > 0.0 && self.r <= 1.0) {
            problems.push(format!("r must lie in (0, 1], got {}", self.r));
        }
        if !(self.structure_r > 0.0 && self.structure_r <= 1.0) {
            problems.push(format!("structure_r must lie in (0, 1], got {}", self.structure_r));
        }
        if let DtPolicy::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                problems.push(format!("fixed dt must be positive, got {dt}"));
            }
        }
        if self.modes.is_empty() {
            problems.push("modes must not be empty".into());
        }
        if self.horizons.is_empty() {
            problems.push("horizons must not be empty".into());
        }
        if self.horizons.contains(&0) {
            problems.push("every horizon must be at least 1".into());
        }
        if self.runs == 0 {
            problems.push("runs must be at least 1".into());
        }
        if self.runs > u32::MAX as usize {
            problems.push("too many runs".into());
        }
        if !(0.0..1.0).contains(&self.obs_noise) {
            problems.push(format!("obs_noise must lie in [0, 1), got {}", self.obs_noise));
        }
        if let FieldSource::Synthetic { rows, cols, .. } = self.field {
            if rows < 2 || cols < 2 {
                problems.push(format!("synthetic grid must be at least 2x2, got {rows}x{cols}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    fn load(&self) -> Result<(Workspace, crate::flow::VectorField)> {
        match &self.field {
            FieldSource::File(path) => load_field(path),
            FieldSource::Synthetic { spec, rows, cols } => synthesize_field(spec, *rows, *cols),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// Sample statistics; `std` uses the `n - 1` denominator and is 0 for one value.
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
        let std = if n > 1 {
            (sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stats { mean, median, std, min: sorted[0], max: sorted[n - 1] })
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: usize,
    pub mode: PriorMode,
    pub horizon: usize,
    pub region: String,
    pub runs: usize,
    pub failures: usize,
    pub final_mean: f64,
    pub final_median: f64,
    pub final_std: f64,
    pub final_min: f64,
    pub final_max: f64,
    pub trajectory_mean: f64,
    pub trajectory_median: f64,
    pub trajectory_std: f64,
    pub trajectory_min: f64,
    pub trajectory_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub condition: usize,
    pub run: usize,
    pub start: CellIndex,
    /// Region of the deployment cell.
    pub start_region: String,
    pub true_path: StateTrajectory,
    pub observations: String,
    pub decoded_path: Option<StateTrajectory>,
    pub log_prob: Option<f64>,
    pub errors: Option<ErrorReport>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub dt: f64,
    pub persistent_groups: usize,
    pub transient_groups: usize,
    pub regions: Vec<String>,
    pub conditions: Vec<ConditionSummary>,
    pub runs: Vec<RunRecord>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for row in &self.conditions {
            wtr.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

struct Condition {
    mode: PriorMode,
    horizon: usize,
    region: Option<Region>,
}

fn one_run(
    model: &FlowModel,
    decomposition: &FlowDecomposition,
    cfg: &ExperimentConfig,
    index: usize,
    cond: &Condition,
    run: usize,
) -> Result<RunRecord> {
    let w = &model.workspace;
    let mut rng = run_rng(cfg.seed, index as u32, run as u32);
    let start = match (&cfg.start, &cond.region) {
        (StartPolicy::Cell(z), _) => *z,
        (StartPolicy::PerRegion, Some(region)) => {
            let cells = decomposition.cells_of(region);
            cells[rng.gen_range(0..cells.len())]
        }
        _ => w.cell_of_state(rng.gen_range(0..w.num_free())),
    };
    let hmm = model.hmm(start, cond.mode)?;
    let (true_path, mut obs) = sample_trajectory(w, &model.transitions, hmm.initial(), cond.horizon, &mut rng)?;
    corrupt_observations(&mut obs, cfg.obs_noise, &mut rng);
    let start_region = decomposition.region_of(start).map(|r| r.label()).unwrap_or_default();
    let mut record = RunRecord {
        condition: index,
        run,
        start,
        start_region,
        true_path,
        observations: obs.to_string(),
        decoded_path: None,
        log_prob: None,
        errors: None,
        failure: None,
    };
    match viterbi(&hmm, &obs) {
        Ok(decoded) => {
            record.errors = Some(error_report(w, &record.true_path, &decoded.path)?);
            record.log_prob = Some(decoded.log_prob);
            record.decoded_path = Some(decoded.path);
        }
        Err(e @ Error::ZeroProbability { .. }) => record.failure = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(record)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (w, f) = cfg.load()?;
    let dt = match cfg.dt {
        DtPolicy::CellCrossing => None,
        DtPolicy::Fixed(dt) => Some(EulerStep::new(dt)?),
    };
    let model = FlowModel::build(w, f, dt, cfg.r)?;
    run_experiment_on(cfg, &model)
}

/// Runs the protocol of `cfg` against an already built model; `cfg.field`
/// and `cfg.dt` are not consulted.
pub fn run_experiment_on(cfg: &ExperimentConfig, model: &FlowModel) -> Result<ExperimentReport> {
    cfg.validate()?;
    let w = &model.workspace;
    if let StartPolicy::Cell(z) = cfg.start {
        w.check_water(z).map_err(|e| Error::Config(vec![format!("start cell: {e}")]))?;
    }
    let decomposition = model.with_r(cfg.structure_r)?.decompose()?;
    let regions = decomposition.regions();

    let mut conditions = Vec::new();
    for &mode in &cfg.modes {
        for &horizon in &cfg.horizons {
            if cfg.start == StartPolicy::PerRegion {
                for region in &regions {
                    conditions.push(Condition { mode, horizon, region: Some(region.clone()) });
                }
            } else {
                conditions.push(Condition { mode, horizon, region: None });
            }
        }
    }
    if conditions.len() > u32::MAX as usize {
        return Err(Error::Config(vec!["too many conditions".into()]));
    }

    let jobs: Vec<(usize, usize)> = (0..conditions.len()).flat_map(|c| (0..cfg.runs).map(move |r| (c, r))).collect();
    let exec = |&(c, r): &(usize, usize)| one_run(model, &decomposition, cfg, c, &conditions[c], r);
    #[cfg(feature = "parallel")]
    let runs: Vec<RunRecord> = jobs.par_iter().map(exec).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<RunRecord> = jobs.iter().map(exec).collect::<Result<_>>()?;

    let summaries = conditions
        .iter()
        .enumerate()
        .map(|(i, cond)| {
            let recs: Vec<&RunRecord> = runs.iter().filter(|r| r.condition == i).collect();
            let ok: Vec<ErrorReport> = recs.iter().filter_map(|r| r.errors).collect();
            let fin: Vec<f64> = ok.iter().map(|e| e.final_error).collect();
            let traj: Vec<f64> = ok.iter().map(|e| e.trajectory_error).collect();
            let nan = Stats { mean: f64::NAN, median: f64::NAN, std: f64::NAN, min: f64::NAN, max: f64::NAN };
            let fs = Stats::of(&fin).unwrap_or_else(|| nan.clone());
            let ts = Stats::of(&traj).unwrap_or(nan);
            ConditionSummary {
                condition: i,
                mode: cond.mode,
                horizon: cond.horizon,
                region: cond.region.as_ref().map(Region::label).unwrap_or_default(),
                runs: recs.len(),
                failures: recs.len() - ok.len(),
                final_mean: fs.mean,
                final_median: fs.median,
                final_std: fs.std,
                final_min: fs.min,
                final_max: fs.max,
                trajectory_mean: ts.mean,
                trajectory_median: ts.median,
                trajectory_std: ts.std,
                trajectory_min: ts.min,
                trajectory_max: ts.max,
            }
        })
        .collect();

    Ok(ExperimentReport {
        name: cfg.name.clone(),
        config: cfg.clone(),
        dt: model.dt.get(),
        persistent_groups: decomposition.persistent_groups.len(),
        transient_groups: decomposition.transient_groups.len(),
        regions: regions.iter().map(Region::label).collect(),
        conditions: summaries,
        runs,
    })
}
