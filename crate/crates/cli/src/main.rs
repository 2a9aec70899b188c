use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use driftloc::sim::{sample_trajectory_seeded, FieldSource};
use driftloc::{
    load_field, run_experiment, save_field, synthesize_field, viterbi, CellIndex, EulerStep, ExperimentConfig,
    FlowModel, ObservationHistory, PriorMode, SyntheticField, VectorField, Workspace,
};
use serde_json::json;

/// Drifter localization over cell-to-cell mapped current fields.
#[derive(Parser)]
#[command(name = "driftloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split the grid into attractors and transient groups; prints JSON.
    Classify {
        #[command(flatten)]
        field: FieldArgs,
        /// Perfect-motion probability. Below 1 every water body is one class.
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        /// Also write decomposition.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Decode the most likely drifter path from a compass history; prints JSON.
    Localize {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 0.9)]
        r: f64,
        /// Initial distribution: `det` (point mass) or `prob` (cell and neighbors).
        #[arg(long, default_value = "det")]
        pi: PriorMode,
        /// Deployment cell index.
        #[arg(long)]
        start: usize,
        /// File holding compass symbols (N NE E SE S SW W NW I).
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run a Monte-Carlo experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample a drifter path and its compass history from the chain.
    Simulate {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 0.9)]
        r: f64,
        #[arg(long, default_value = "det")]
        pi: PriorMode,
        #[arg(long)]
        start: usize,
        #[arg(long, default_value_t = 40)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the observation history here (one line).
        #[arg(long)]
        obs: Option<PathBuf>,
    },
    /// Write a synthetic field to a field file.
    Synth {
        #[arg(long)]
        synthetic: String,
        #[arg(long, default_value_t = 21)]
        rows: usize,
        #[arg(long, default_value_t = 29)]
        cols: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FieldArgs {
    /// Field file.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    field: Option<PathBuf>,
    /// Synthetic field: `uniform`, `single_gyre`, `double_gyre`, `saddle`, `still`,
    /// or a JSON object such as `{"kind":"uniform","u":0.5,"v":0}`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, default_value_t = 21)]
    rows: usize,
    #[arg(long, default_value_t = 29)]
    cols: usize,
}

fn synthetic_spec(name: &str) -> Result<SyntheticField> {
    Ok(match name {
        "uniform" => SyntheticField::Uniform { u: 1.0, v: 0.0 },
        "still" => SyntheticField::Uniform { u: 0.0, v: 0.0 },
        "single_gyre" => SyntheticField::SingleGyre { amplitude: 1.0, inflow: 1.0, core: 2.0 },
        "double_gyre" => SyntheticField::double_gyre(),
        "saddle" => SyntheticField::Saddle { amplitude: 1.0 },
        s if s.trim_start().starts_with('{') => {
            serde_json::from_str(s).with_context(|| format!("invalid synthetic field spec {s}"))?
        }
        other => bail!("unknown synthetic field {other:?}"),
    })
}

impl FieldArgs {
    fn load(&self) -> Result<(Workspace, VectorField)> {
        match (&self.field, &self.synthetic) {
            (Some(path), _) => load_field(path).with_context(|| format!("loading {}", path.display())),
            (None, Some(name)) => Ok(synthesize_field(&synthetic_spec(name)?, self.rows, self.cols)?),
            (None, None) => bail!("either --field or --synthetic is required"),
        }
    }

    fn model(&self, r: f64) -> Result<FlowModel> {
        let (w, f) = self.load()?;
        Ok(FlowModel::build(w, f, None, r)?)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn classify(field: &FieldArgs, r: f64, out_dir: Option<&Path>) -> Result<()> {
    let model = field.model(r)?;
    let d = model.decompose()?;
    let report = d.to_report();
    eprintln!(
        "{} persistent groups, {} transient groups ({} persistent / {} transient cells)",
        report.persistent_group_count,
        report.transient_group_count,
        report.persistent_cell_count,
        report.transient_cell_count
    );
    for g in report.persistent_groups.iter().chain(&report.transient_groups) {
        eprintln!("  {:<10} {:>5} cells", g.label, g.size);
    }
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(dir) = out_dir {
        write_file(&dir.join("decomposition.json"), &text)?;
    }
    println!("{text}");
    Ok(())
}

fn localize(field: &FieldArgs, r: f64, pi: PriorMode, start: usize, obs: &Path, out_dir: Option<&Path>) -> Result<()> {
    let model = field.model(r)?;
    let text = fs::read_to_string(obs).with_context(|| format!("reading {}", obs.display()))?;
    let history: ObservationHistory = text.parse()?;
    let hmm = model.hmm(CellIndex(start), pi)?;
    let decoded = viterbi(&hmm, &history)?;
    let out = json!({
        "start": start,
        "mode": pi,
        "r": r,
        "observations": history.to_string(),
        "path": decoded.path,
        "final_state": decoded.final_state(),
        "log_prob": decoded.log_prob,
    });
    let text = serde_json::to_string_pretty(&out)?;
    if let Some(dir) = out_dir {
        write_file(&dir.join("trajectory.json"), &text)?;
    }
    println!("{text}");
    Ok(())
}

fn experiment(config: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    // field files are relative to the config file
    if let FieldSource::File(path) = &cfg.field {
        if path.is_relative() {
            let base = config.parent().unwrap_or(Path::new("."));
            cfg.field = FieldSource::File(base.join(path));
        }
    }
    cfg.validate()?;
    log::info!("running experiment {}", cfg.name);
    let report = run_experiment(&cfg)?;

    let csv_path = out_dir.join(cfg.outputs.csv.clone().unwrap_or_else(|| format!("{}.csv", cfg.name).into()));
    let json_path = out_dir.join(cfg.outputs.json.clone().unwrap_or_else(|| format!("{}.json", cfg.name).into()));
    write_file(&csv_path, &report.to_csv()?)?;
    write_file(&json_path, &report.to_json()?)?;

    println!(
        "{}: {} persistent / {} transient groups, dt = {}",
        report.name, report.persistent_groups, report.transient_groups, report.dt
    );
    println!(
        "{:>4} {:<13} {:>5} {:<8} {:>5} {:>5} {:>11} {:>11}",
        "cond", "mode", "T", "region", "runs", "fail", "final_mean", "traj_mean"
    );
    for c in &report.conditions {
        println!(
            "{:>4} {:<13} {:>5} {:<8} {:>5} {:>5} {:>11.4} {:>11.4}",
            c.condition, c.mode, c.horizon, c.region, c.runs, c.failures, c.final_mean, c.trajectory_mean
        );
    }
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn simulate(
    field: &FieldArgs,
    r: f64,
    pi: PriorMode,
    start: usize,
    steps: usize,
    seed: u64,
    obs: Option<&Path>,
) -> Result<()> {
    let model = field.model(r)?;
    let hmm = model.hmm(CellIndex(start), pi)?;
    let (path, history) = sample_trajectory_seeded(&model.workspace, &model.transitions, hmm.initial(), steps, seed)?;
    if let Some(p) = obs {
        write_file(p, &format!("{history}\n"))?;
    }
    let out =
        json!({ "start": start, "mode": pi, "r": r, "seed": seed, "path": path, "observations": history.to_string() });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn synth(name: &str, rows: usize, cols: usize, out: &Path) -> Result<()> {
    let spec = synthetic_spec(name)?;
    let (w, f) = synthesize_field(&spec, rows, cols)?;
    let speed = EulerStep::cell_crossing(&w, &f);
    log::debug!("cell-crossing step {}", speed.get());
    write_file(out, &save_field(&w, &f)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Classify { field, r, out_dir } => classify(&field, r, out_dir.as_deref()),
        Command::Localize { field, r, pi, start, obs, out_dir } => {
            localize(&field, r, pi, start, &obs, out_dir.as_deref())
        }
        Command::Experiment { config, out_dir, seed } => experiment(&config, &out_dir, seed),
        Command::Simulate { field, r, pi, start, steps, seed, obs } => {
            simulate(&field, r, pi, start, steps, seed, obs.as_deref())
        }
        Command::Synth { synthetic, rows, cols, out } => synth(&synthetic, rows, cols, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DRIFTLOC_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
